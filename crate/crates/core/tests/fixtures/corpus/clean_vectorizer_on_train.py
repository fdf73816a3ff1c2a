# expect: clean
import pandas as pd
from sklearn.feature_extraction.text import CountVectorizer
from sklearn.model_selection import train_test_split
from sklearn.naive_bayes import MultinomialNB

mails = pd.read_csv("spam.csv")
text_train, text_test, y_train, y_test = train_test_split(mails["body"], mails["spam"])
cv = CountVectorizer()
cv.fit(text_train)
X_train = cv.transform(text_train)
X_test = cv.transform(text_test)
nb = MultinomialNB()
nb.fit(X_train, y_train)
print(nb.score(X_test, y_test))
