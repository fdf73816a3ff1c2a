# expect: overlap
import pandas as pd
from imblearn.over_sampling import SMOTE
from sklearn.model_selection import train_test_split
from sklearn.ensemble import GradientBoostingClassifier

fraud = pd.read_csv("fraud.csv")
X = fraud.drop(columns=["is_fraud"])
y = fraud["is_fraud"]
X_bal, y_bal = SMOTE(random_state=7).fit_resample(X, y)
X_train, X_test, y_train, y_test = train_test_split(X_bal, y_bal, test_size=0.2)
gb = GradientBoostingClassifier()
gb.fit(X_train, y_train)
print(gb.score(X_test, y_test))
