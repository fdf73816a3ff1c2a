# expect: preprocessing
import pandas as pd
from sklearn.model_selection import train_test_split
from sklearn.ensemble import RandomForestRegressor

houses = pd.read_csv("houses.csv")
houses = houses.fillna(houses.mean())
features = houses.drop(columns=["price"])
price = houses["price"]
X_tr, X_te, y_tr, y_te = train_test_split(features, price)
rf = RandomForestRegressor(n_estimators=200)
rf.fit(X_tr, y_tr)
preds = rf.predict(X_te)
